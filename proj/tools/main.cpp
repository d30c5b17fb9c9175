#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return smart::cli::run(argc, argv, std::cout, std::cerr); }
