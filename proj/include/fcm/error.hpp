#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fcm {

/// One broken rule found while checking a model, scenario or document.
/// `rule` is a stable machine-readable id (e.g. "weight_out_of_range"),
/// `where` names the offending concept, edge or document position.
struct Violation {
  std::string rule;
  std::string where;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Error raised by every throwing operation in the library.
class FcmError : public std::runtime_error {
 public:
  FcmError(std::string rule, std::string message, std::string where = {},
           std::vector<Violation> violations = {})
      : std::runtime_error(compose(rule, message, where)),
        rule_(std::move(rule)),
        message_(std::move(message)),
        where_(std::move(where)),
        violations_(std::move(violations)) {}

  const std::string& rule() const noexcept { return rule_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& where() const noexcept { return where_; }
  /// Populated when the error wraps a failed model validation.
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string compose(const std::string& rule, const std::string& message,
                             const std::string& where) {
    std::string s = rule + ": " + message;
    if (!where.empty()) s += " (at " + where + ")";
    return s;
  }

  std::string rule_;
  std::string message_;
  std::string where_;
  std::vector<Violation> violations_;
};

}  // namespace fcm
