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

#include "xfnl/prompting.h"

#include <map>

#include "json.hpp"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {

// Defined in the generated instruction_resource.cc.
extern const char kBundledInstruction[];

std::string_view TargetKindName(TargetKind kind) {
  return kind == TargetKind::kDocumentation ? "documentation" : "tag_words";
}

std::string_view DefaultInstruction() { return kBundledInstruction; }

std::string LoadInstruction(const std::string& path) {
  std::string text(Trim(ReadFile(path)));
  if (text.empty()) {
    throw Error(ErrorCode::kConfig, "instruction file is empty: " + path);
  }
  return text;
}

std::string Question(std::string_view surface) {
  return "What is the tag associated with the numeral " +
         std::string(surface) + "?";
}

std::string RenderInput(std::string_view text, std::string_view surface,
                        const PromptMode& mode, std::string_view instruction) {
  std::string out;
  if (mode.with_instruction) {
    if (instruction.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "instruction text is empty");
    }
    out.append(instruction);
    out.push_back(' ');
  }
  out.append(text);
  out.push_back(' ');
  out += Question(surface);
  return out;
}

std::string ExpectedTarget(const Taxonomy& taxonomy, std::string_view tag_id,
                           TargetKind kind) {
  const TagRecord& record = taxonomy.Get(tag_id);
  if (record.tag_id == kOthersTag) return std::string(kOthersTag);
  return kind == TargetKind::kDocumentation ? record.documentation
                                            : record.tag_id;
}

PromptInstance RenderPrompt(const Statement& statement,
                            std::size_t mention_index, const PromptMode& mode,
                            std::string_view instruction,
                            const Taxonomy& taxonomy) {
  if (mention_index >= statement.mentions.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "mention " + std::to_string(mention_index) +
                    " not in statement '" + statement.sid + "'");
  }
  const NumeralMention& m = statement.mentions[mention_index];
  PromptInstance p;
  p.sid = statement.sid;
  p.mention_index = mention_index;
  p.input_text = RenderInput(statement.text, m.surface, mode, instruction);
  p.expected_target = ExpectedTarget(taxonomy, m.gold_tag, mode.target);
  p.mode = mode;
  return p;
}

std::vector<PromptGroup> RenderStatement(const Statement& statement,
                                         const PromptMode& mode,
                                         std::string_view instruction,
                                         const Taxonomy& taxonomy) {
  std::vector<PromptGroup> groups;
  std::map<std::string, std::size_t> by_surface;
  for (std::size_t i = 0; i < statement.mentions.size(); ++i) {
    const auto [it, inserted] =
        by_surface.emplace(statement.mentions[i].surface, groups.size());
    if (inserted) {
      groups.push_back(
          {RenderPrompt(statement, i, mode, instruction, taxonomy), {i}});
    } else {
      groups[it->second].mention_indices.push_back(i);
    }
  }
  return groups;
}

std::string PromptInstanceToJson(const PromptInstance& prompt) {
  return nlohmann::json{
      {"sid", prompt.sid},
      {"mention", prompt.mention_index},
      {"input", prompt.input_text},
      {"target", prompt.expected_target},
      {"with_instruction", prompt.mode.with_instruction},
      {"target_kind", TargetKindName(prompt.mode.target)}}
      .dump();
}

}  // namespace xfnl
