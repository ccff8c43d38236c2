#include "kmn/cli.hpp"

int main(int argc, char** argv) { return kmn::run_cli(argc, argv); }
