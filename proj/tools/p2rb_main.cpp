// SPDX-License-Identifier: Apache-2.0
#include "p2rb/cli.hpp"

int main(int argc, char** argv) { return p2rb::cli_main(argc, argv); }
