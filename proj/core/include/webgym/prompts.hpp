#pragma once

#include <map>
#include <string>
#include <string_view>

namespace webgym {

// Replaces every "{key}" with its value. Unknown placeholders stay verbatim;
// literal braces elsewhere in the template are untouched.
std::string fill_template(std::string_view tpl,
                          const std::map<std::string, std::string>& values);

std::string load_text_file(const std::string& path);

// Prompt asset directory: $WEBGYM_ASSETS when set, else "assets/prompts"
// relative to the working directory.
std::string default_asset_dir();

inline constexpr std::string_view kExtractPromptFile = "qa_extract.txt";
inline constexpr std::string_view kRubricPromptFile = "qa_rubric.txt";
inline constexpr std::string_view kJudgePromptFile = "judge.txt";

}  // namespace webgym
