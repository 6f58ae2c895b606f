#include "hintgen/cli.hpp"

int main(int argc, char **argv) { return hintgen::cli::run(argc, argv); }
