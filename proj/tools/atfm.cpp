#include <iostream>

#include "atfm/cli.hpp"

int main(int argc, char** argv) { return atfm::cli::run(argc, argv, std::cout, std::cerr); }
