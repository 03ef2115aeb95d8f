#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lfi {

/// Handle for an element registered in a ProgramRegistry. Ids are assigned in
/// creation order and never reused, so they double as a deterministic tiebreak.
struct ElementId {
  std::uint64_t raw = 0;
  friend constexpr auto operator<=>(ElementId, ElementId) = default;
};

class Value;

/// A constructed value's field is either a plain value or a reference to an
/// element (the lazy case: Cons holds the element computing its tail, not the
/// tail itself).
using ValueField = std::variant<Value, ElementId>;

/// Immutable structural value. Cheap to copy (shared payload), hash is
/// precomputed at construction.
class Value {
 public:
  enum class Kind { Bool, Int, Symbol, Unit, Constructed };

  static Value boolean(bool b);
  static Value integer(std::int64_t i);
  static Value symbol(std::string name);
  static Value unit();
  static Value constructed(std::string ctor, std::vector<ValueField> fields);

  Kind kind() const;
  bool as_bool() const;
  std::int64_t as_int() const;
  const std::string& symbol_name() const;

  const std::string& ctor() const;
  std::size_t num_fields() const;
  const ValueField& field(std::size_t i) const;
  /// Shorthands that throw ModelError when the field has the other flavor.
  ElementId field_id(std::size_t i) const;
  const Value& field_value(std::size_t i) const;

  bool operator==(const Value& other) const;
  bool operator!=(const Value& other) const { return !(*this == other); }

  std::size_t hash() const;
  std::string str() const;

  /// Total order used for canonical range layout: kind tag first, then the
  /// natural order within a kind; constructed values compare by ctor, arity,
  /// then fieldwise (embedded element ids compare by creation order).
  static int compare(const Value& a, const Value& b);

 private:
  struct Data;
  explicit Value(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

struct ValueHash {
  std::size_t operator()(const Value& v) const { return v.hash(); }
};

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const {
    return Value::compare(a, b) < 0;
  }
};

/// Value extended with Star, the placeholder for "result of computation not
/// explored yet". Star sorts after every regular value.
class ExtendedValue {
 public:
  ExtendedValue(Value v) : value_(std::move(v)) {}  // NOLINT: implicit by design
  static ExtendedValue star() { return ExtendedValue(); }

  bool is_star() const { return !value_.has_value(); }
  const Value& value() const;

  bool operator==(const ExtendedValue& other) const;
  bool operator!=(const ExtendedValue& other) const { return !(*this == other); }

  std::size_t hash() const;
  std::string str() const;
  static int compare(const ExtendedValue& a, const ExtendedValue& b);

 private:
  ExtendedValue() = default;
  std::optional<Value> value_;
};

struct ExtendedValueHash {
  std::size_t operator()(const ExtendedValue& v) const { return v.hash(); }
};

struct ExtendedValueLess {
  bool operator()(const ExtendedValue& a, const ExtendedValue& b) const {
    return ExtendedValue::compare(a, b) < 0;
  }
};

std::size_t hash_combine(std::size_t seed, std::size_t v);

}  // namespace lfi

template <>
struct std::hash<lfi::ElementId> {
  std::size_t operator()(lfi::ElementId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.raw);
  }
};
