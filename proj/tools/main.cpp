#include "elmarket/cli.hpp"

int main(int argc, char** argv) { return elmarket::cli::main(argc, argv); }
