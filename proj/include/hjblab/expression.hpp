#pragma once

#include <functional>
#include <memory>
#include <string>

namespace hjb {

/// Compiled scalar field of position, e.g. coefficient "1 + 0.5*sin(x)*y".
using ScalarField = std::function<double(double x, double y)>;

/// Compiles a small arithmetic expression into a ScalarField.
///
/// Grammar: numbers, variables x and y, constants pi and e, operators
/// + - * / ^ with usual precedence, unary minus, parentheses, and the
/// functions sin cos tan exp log sqrt abs tanh sign min(a,b) max(a,b)
/// pow(a,b). Throws std::invalid_argument with a position marker on
/// malformed input.
ScalarField compile_expression(const std::string& text);

/// Convenience: a constant field.
ScalarField constant_field(double value);

} // namespace hjb
