// Copyright 2026 The XFNL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XFNL_PROMPTING_H_
#define XFNL_PROMPTING_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "xfnl/corpus.h"

namespace xfnl {

enum class TargetKind { kDocumentation, kTagWords };

std::string_view TargetKindName(TargetKind kind);

struct PromptMode {
  bool with_instruction = true;
  TargetKind target = TargetKind::kDocumentation;

  bool operator==(const PromptMode&) const = default;
};

struct PromptInstance {
  std::string sid;
  std::size_t mention_index = 0;
  std::string input_text;
  std::string expected_target;
  PromptMode mode;

  bool operator==(const PromptInstance&) const = default;
};

// The bundled preamble (resources/instruction_v1.txt).
std::string_view DefaultInstruction();

// Reads an instruction file, dropping surrounding whitespace.
std::string LoadInstruction(const std::string& path);

std::string Question(std::string_view surface);

// instruction + " " + text + " " + question, or text + " " + question when
// the mode has no instruction.
std::string RenderInput(std::string_view text, std::string_view surface,
                        const PromptMode& mode, std::string_view instruction);

// The generation target for a gold tag: its documentation or its tag words.
// OTHERS renders as "others" in both modes.
std::string ExpectedTarget(const Taxonomy& taxonomy, std::string_view tag_id,
                           TargetKind kind);

PromptInstance RenderPrompt(const Statement& statement,
                            std::size_t mention_index, const PromptMode& mode,
                            std::string_view instruction,
                            const Taxonomy& taxonomy);

// Mentions of one statement that share a surface string render to the same
// input; they form one group and receive the same prediction.
struct PromptGroup {
  PromptInstance prompt;  // rendered for the first mention of the group
  std::vector<std::size_t> mention_indices;
};

std::vector<PromptGroup> RenderStatement(const Statement& statement,
                                         const PromptMode& mode,
                                         std::string_view instruction,
                                         const Taxonomy& taxonomy);

// One JSON object, no trailing newline.
std::string PromptInstanceToJson(const PromptInstance& prompt);

}  // namespace xfnl

#endif  // XFNL_PROMPTING_H_
