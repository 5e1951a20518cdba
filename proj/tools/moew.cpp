#include "moew/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return moew::run_cli(argc, argv, std::cout, std::cerr); }
