#include <iostream>

#include "rydtrans/cli.hpp"

int main(int argc, char** argv) { return rydtrans::cli::run(argc, argv, std::cout, std::cerr); }
