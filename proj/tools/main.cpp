#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return gradspec::cli::run(argc, argv, std::cout, std::cerr); }
