#include "mnemo/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mnemo::cli_dispatch(std::move(args), std::cout, std::cerr);
}
