#include "emorf/cli.hpp"

int main(int argc, char** argv) { return emorf::cli::run(argc, argv); }
