#include <iostream>

#include "tpla/cli/app.hpp"

int main(int argc, char** argv) { return tpla::cli::run(argc, argv, std::cout, std::cerr); }
