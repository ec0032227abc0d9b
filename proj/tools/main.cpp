#include <iostream>

#include "gzsl_align/cli.hpp"

int main(int argc, char** argv) { return gzsl::cli::run(argc, argv, std::cout, std::cerr); }
