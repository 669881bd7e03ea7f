#include <iostream>

#include "tcl2/cli.hpp"

int main(int argc, char** argv) { return tcl2::cli::run(argc, argv, std::cout, std::cerr); }
