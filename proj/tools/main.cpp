#include <iostream>

#include "chronotact/cli.hpp"

int main(int argc, char** argv) { return chronotact::cli::run(argc, argv, std::cerr); }
