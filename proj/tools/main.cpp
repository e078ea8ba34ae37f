#include "commands.hpp"

int main(int argc, char** argv) {
  return rfx::cli::run_cli({argv + 1, argv + argc});
}
