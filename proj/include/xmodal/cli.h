// Copyright 2026 The xmodal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMODAL_CLI_H_
#define XMODAL_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace xmodal {

// Process exit codes of the `xmodal` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
};

// Parses `args` (without the program name), runs the subcommand and returns
// the exit code. Failures print one `xmodal: error[<category>]: <message>`
// line to `err`.
int ParseAndDispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmodal

#endif  // XMODAL_CLI_H_
