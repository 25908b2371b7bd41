#include "meterguard/cli/commands.hpp"

int main(int argc, char** argv) {
  return meterguard::cli::run_cli(std::vector<std::string>(argv, argv + argc));
}
