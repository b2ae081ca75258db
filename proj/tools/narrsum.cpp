#include "narrsum/cli.hpp"

int main(int argc, char** argv) { return narrsum::cli::run(argc, argv); }
