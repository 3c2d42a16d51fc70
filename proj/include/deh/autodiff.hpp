#pragma once

// Scalar reverse-mode differentiation.
//
// Every arithmetic operation on a Var whose operand lives on the active tape
// appends one node holding at most two parents and the local partials. A
// reverse sweep over the node list accumulates adjoints. Vars with id < 0 are
// constants and never touch the tape, so the same templated model code runs on
// plain floats, doubles and Vars.

#include <cmath>
#include <cstdint>
#include <vector>

#include "deh/error.hpp"

namespace deh::ad {

template <class R>
class Tape {
 public:
  struct Node {
    std::int32_t lhs;
    std::int32_t rhs;
    R dlhs;
    R drhs;
  };

  std::int32_t push(std::int32_t lhs, R dlhs, std::int32_t rhs, R drhs) {
    nodes_.push_back(Node{lhs, rhs, dlhs, drhs});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t leaf() { return push(-1, R(0), -1, R(0)); }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  void reserve(std::size_t n) { nodes_.reserve(n); }

  // `adjoint` must have size() entries; seeds are set by the caller.
  void backward(std::vector<R>& adjoint) const {
    require(adjoint.size() == nodes_.size(), ErrorKind::dimension_mismatch,
            "adjoint vector does not match tape length");
    for (std::size_t k = nodes_.size(); k-- > 0;) {
      const R g = adjoint[k];
      if (g == R(0)) continue;
      const Node& nd = nodes_[k];
      if (nd.lhs >= 0) adjoint[static_cast<std::size_t>(nd.lhs)] += g * nd.dlhs;
      if (nd.rhs >= 0) adjoint[static_cast<std::size_t>(nd.rhs)] += g * nd.drhs;
    }
  }

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

 private:
  std::vector<Node> nodes_;
};

// Makes `tape` the active tape of the calling thread for the scope lifetime.
template <class R>
class TapeScope {
 public:
  explicit TapeScope(Tape<R>& tape) : previous_(Tape<R>::active()) {
    Tape<R>::active() = &tape;
  }
  ~TapeScope() { Tape<R>::active() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<R>* previous_;
};

template <class R>
class Var {
 public:
  using real_type = R;

  Var() = default;
  Var(R value) : value_(value) {}  // NOLINT: constants convert implicitly
  Var(R value, std::int32_t id) : value_(value), id_(id) {}

  // Registers a new independent variable on the active tape.
  static Var leaf(R value) { return Var(value, tape().leaf()); }

  R value() const { return value_; }
  std::int32_t id() const { return id_; }
  bool on_tape() const { return id_ >= 0; }

  friend Var operator+(const Var& a, const Var& b) {
    return record(a.value_ + b.value_, a, R(1), b, R(1));
  }
  friend Var operator-(const Var& a, const Var& b) {
    return record(a.value_ - b.value_, a, R(1), b, R(-1));
  }
  friend Var operator*(const Var& a, const Var& b) {
    return record(a.value_ * b.value_, a, b.value_, b, a.value_);
  }
  friend Var operator/(const Var& a, const Var& b) {
    const R inv = R(1) / b.value_;
    const R q = a.value_ * inv;
    return record(q, a, inv, b, -q * inv);
  }
  friend Var operator-(const Var& a) { return unary(-a.value_, a, R(-1)); }

  Var& operator+=(const Var& b) { return *this = *this + b; }
  Var& operator-=(const Var& b) { return *this = *this - b; }
  Var& operator*=(const Var& b) { return *this = *this * b; }
  Var& operator/=(const Var& b) { return *this = *this / b; }

  friend bool operator<(const Var& a, const Var& b) { return a.value_ < b.value_; }
  friend bool operator>(const Var& a, const Var& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Var& a, const Var& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Var& a, const Var& b) { return a.value_ >= b.value_; }

  friend Var sqrt(const Var& a) {
    const R s = std::sqrt(a.value_);
    return unary(s, a, R(0.5) / s);
  }
  friend Var exp(const Var& a) {
    const R e = std::exp(a.value_);
    return unary(e, a, e);
  }
  friend Var log(const Var& a) { return unary(std::log(a.value_), a, R(1) / a.value_); }
  friend Var sin(const Var& a) { return unary(std::sin(a.value_), a, std::cos(a.value_)); }
  friend Var cos(const Var& a) { return unary(std::cos(a.value_), a, -std::sin(a.value_)); }
  friend Var abs(const Var& a) {
    return unary(std::abs(a.value_), a, a.value_ < R(0) ? R(-1) : R(1));
  }

  static Tape<R>& tape() {
    Tape<R>* t = Tape<R>::active();
    require(t != nullptr, ErrorKind::invalid_argument, "no active tape on this thread");
    return *t;
  }

 private:
  static Var unary(R value, const Var& a, R da) {
    if (!a.on_tape()) return Var(value);
    return Var(value, tape().push(a.id_, da, -1, R(0)));
  }

  static Var record(R value, const Var& a, R da, const Var& b, R db) {
    if (!a.on_tape() && !b.on_tape()) return Var(value);
    return Var(value, tape().push(a.id_, da, b.id_, db));
  }

  R value_ = R(0);
  std::int32_t id_ = -1;
};

}  // namespace deh::ad

namespace deh {

template <class T>
struct scalar_traits {
  using real = T;
  static T value(const T& x) { return x; }
};

template <class R>
struct scalar_traits<ad::Var<R>> {
  using real = R;
  static R value(const ad::Var<R>& x) { return x.value(); }
};

// Plain numeric value of a scalar, stripping any tape identity.
template <class T>
auto value_of(const T& x) {
  return scalar_traits<T>::value(x);
}

}  // namespace deh
