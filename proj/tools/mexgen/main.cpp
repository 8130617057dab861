#include "commands.hpp"

int main(int argc, char** argv) { return mexgen::cli::run(argc, argv); }
