#include "help/harness.hpp"

int main(int argc, char** argv) { return help::cli::run_cli(argc, argv); }
