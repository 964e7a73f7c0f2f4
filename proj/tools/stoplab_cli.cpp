#include "stoplab/cli.hpp"

int main(int argc, char** argv) { return stoplab::cli::run_command(argc, argv); }
