// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <iostream>

#include "pcsim/cli.hpp"

int main(int argc, char **argv) {
  return pcsim::cli::run_cli(argc, argv, std::cout, std::cerr);
}
