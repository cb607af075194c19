#include <iostream>

#include "mvexpectile/cli.hpp"

int main(int argc, char** argv) { return mvexpectile::cli::main(argc, argv, std::cout, std::cerr); }
