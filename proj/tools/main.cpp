#include "cli.hpp"

int main(int argc, char **argv) { return gchmm::cli::cli_main(argc, argv); }
