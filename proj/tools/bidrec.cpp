#include <iostream>

#include "bidrec/commands.hpp"

int main(int argc, char** argv) { return bidrec::cli::run(argc, argv, std::cout, std::cerr); }
