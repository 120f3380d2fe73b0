#include "harness/harness.hpp"

int main(int argc, char** argv) { return coxmix::cli::run(argc, argv); }
