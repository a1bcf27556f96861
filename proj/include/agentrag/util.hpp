#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace agentrag {

std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view separator);

/// Replaces every occurrence of `placeholder` with `value`.
std::string replace_all(std::string text, std::string_view placeholder, std::string_view value);

/// Single-pass substitution of `{name}` slots; unknown slots are kept
/// verbatim and substituted text is never rescanned.
std::string fill_slots(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Reads a whole file. Throws LoadError naming the path on failure.
std::string read_text_file(const std::filesystem::path& path);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls `fn(i)` for every i in [0, count) on up to `max_parallel` threads.
/// Exceptions are captured per index; the returned vector holds a null
/// pointer for every index that completed normally.
std::vector<std::exception_ptr> parallel_for(std::size_t count, std::size_t max_parallel,
                                             const std::function<void(std::size_t)>& fn);

/// Like parallel_for, but rethrows the exception of the lowest failing index.
void parallel_for_or_throw(std::size_t count, std::size_t max_parallel,
                           const std::function<void(std::size_t)>& fn);

}  // namespace agentrag
