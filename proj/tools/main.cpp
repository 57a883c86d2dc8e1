#include <iostream>
#include <string>
#include <vector>

#include "trilab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return trilab::run_cli(args, std::cout, std::cerr);
}
