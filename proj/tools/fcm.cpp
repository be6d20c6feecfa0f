#include "fcm/cli.hpp"

int main(int argc, char** argv) { return fcm::cli::run_cli(argc, argv); }
