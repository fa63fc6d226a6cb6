#include "bohm/cli.hpp"

int main(int argc, char** argv) { return bohm::cli::main(argc, argv); }
