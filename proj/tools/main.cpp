#include "riskmcts/experiments.hpp"

int main(int argc, char** argv) { return riskmcts::cli_main(argc, argv); }
