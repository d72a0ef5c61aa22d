#include <iostream>

#include "mffnc/cli.hpp"

int main(int argc, char** argv) { return mffnc::run_cli(argc, argv, std::cout, std::cerr); }
