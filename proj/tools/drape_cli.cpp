#include "drape/cli.hpp"

int main(int argc, char** argv) { return drape::cli::run(argc, argv); }
