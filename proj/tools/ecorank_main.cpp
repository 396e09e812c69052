#include <vector>

#include "ecorank/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ecorank::cli::run(args);
}
