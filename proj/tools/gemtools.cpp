#include "gemtools/cli.hpp"

int main(int argc, char** argv) { return gemtools::cli::run(argc, argv); }
