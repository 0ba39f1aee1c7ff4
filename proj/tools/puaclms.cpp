#include "puaclms/cli.hpp"

int main(int argc, char** argv) { return puaclms::cli::cli_main(argc, argv); }
