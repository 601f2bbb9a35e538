#include <string>
#include <vector>

#include "varscore/cli.hpp"

int main(int argc, char** argv) {
  return varscore::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
