#include <iostream>

#include "ssv/cli.hpp"

int main(int argc, char** argv) { return ssv::cli::run(argc, argv, std::cout, std::cerr); }
