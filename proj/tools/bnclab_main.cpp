// Entry point for the bnclab command-line tool.
#include <string>
#include <vector>

#include "bnc/experiments.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return bnc::run_cli(std::move(args));
}
