#include "delaynet/cli.hpp"

int main(int argc, char** argv) { return delaynet::run_cli(argc, argv); }
