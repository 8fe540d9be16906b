#include "cfx/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return cfx::run_cli(argc, argv, std::cout, std::cerr);
}
