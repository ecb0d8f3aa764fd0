// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/cli/cli.hpp"

int main(int argc, char** argv) { return ecd::cli::run(argc, argv); }
