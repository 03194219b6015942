#include <vector>

#include "nlos/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return nlos::cli::run(args);
}
