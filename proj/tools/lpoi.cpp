#include "lpoi/cli.hpp"

int main(int argc, char** argv) { return lpoi::cli::run(argc, argv); }
