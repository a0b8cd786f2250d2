#include "modcausal/cli.hpp"

int main(int argc, char** argv) { return modcausal::cli::run(argc, argv); }
