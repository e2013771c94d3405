#include "cbpl/cli.hpp"

int main(int argc, char** argv) {
  return cbpl::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
