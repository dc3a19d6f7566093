#include "agentforest/cli.hpp"

int main(int argc, char** argv) { return agentforest::cli_main(argc, argv); }
