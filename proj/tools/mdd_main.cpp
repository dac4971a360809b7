// SPDX-License-Identifier: Apache-2.0
#include "mdd/cli.hpp"

int main(int argc, char** argv) { return mdd::cli_dispatch(argc, argv); }
