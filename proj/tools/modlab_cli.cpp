#include "modlab/harness.hpp"

int main(int argc, char** argv) { return modlab::cli_main(argc, argv); }
