#include "cli.hpp"

int main(int argc, char** argv) { return promptqd::cli::main(argc, argv); }
