#include "deadtime/experiment.hpp"

int main(int argc, char** argv) { return deadtime::cli_entry(argc, argv); }
