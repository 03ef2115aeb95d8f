#include "lfi/value.hpp"

#include <sstream>

#include "lfi/errors.hpp"

namespace lfi {

namespace {

struct ConstructedData {
  std::string ctor;
  std::vector<ValueField> fields;
};

}  // namespace

struct Value::Data {
  std::variant<bool, std::int64_t, std::string, std::monostate, ConstructedData>
      payload;
  std::size_t hash = 0;
};

std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

namespace {

std::size_t field_hash(const ValueField& f) {
  if (std::holds_alternative<Value>(f)) {
    return hash_combine(1, std::get<Value>(f).hash());
  }
  return hash_combine(2, std::hash<std::uint64_t>{}(std::get<ElementId>(f).raw));
}

}  // namespace

Value Value::boolean(bool b) {
  auto d = std::make_shared<Data>();
  d->payload = b;
  d->hash = hash_combine(0x10, std::hash<bool>{}(b));
  return Value(std::move(d));
}

Value Value::integer(std::int64_t i) {
  auto d = std::make_shared<Data>();
  d->payload = i;
  d->hash = hash_combine(0x20, std::hash<std::int64_t>{}(i));
  return Value(std::move(d));
}

Value Value::symbol(std::string name) {
  auto d = std::make_shared<Data>();
  d->hash = hash_combine(0x30, std::hash<std::string>{}(name));
  d->payload = std::move(name);
  return Value(std::move(d));
}

Value Value::unit() {
  auto d = std::make_shared<Data>();
  d->payload = std::monostate{};
  d->hash = 0x40;
  return Value(std::move(d));
}

Value Value::constructed(std::string ctor, std::vector<ValueField> fields) {
  auto d = std::make_shared<Data>();
  std::size_t h = hash_combine(0x50, std::hash<std::string>{}(ctor));
  for (const auto& f : fields) h = hash_combine(h, field_hash(f));
  d->payload = ConstructedData{std::move(ctor), std::move(fields)};
  d->hash = h;
  return Value(std::move(d));
}

Value::Kind Value::kind() const {
  switch (data_->payload.index()) {
    case 0: return Kind::Bool;
    case 1: return Kind::Int;
    case 2: return Kind::Symbol;
    case 3: return Kind::Unit;
    default: return Kind::Constructed;
  }
}

bool Value::as_bool() const {
  if (kind() != Kind::Bool) throw ModelError("value is not a boolean: " + str());
  return std::get<bool>(data_->payload);
}

std::int64_t Value::as_int() const {
  if (kind() != Kind::Int) throw ModelError("value is not an integer: " + str());
  return std::get<std::int64_t>(data_->payload);
}

const std::string& Value::symbol_name() const {
  if (kind() != Kind::Symbol) throw ModelError("value is not a symbol: " + str());
  return std::get<std::string>(data_->payload);
}

const std::string& Value::ctor() const {
  if (kind() != Kind::Constructed)
    throw ModelError("value is not constructed: " + str());
  return std::get<ConstructedData>(data_->payload).ctor;
}

std::size_t Value::num_fields() const {
  if (kind() != Kind::Constructed) return 0;
  return std::get<ConstructedData>(data_->payload).fields.size();
}

const ValueField& Value::field(std::size_t i) const {
  const auto& c = std::get<ConstructedData>(data_->payload);
  if (i >= c.fields.size()) throw ModelError("field index out of range: " + str());
  return c.fields[i];
}

ElementId Value::field_id(std::size_t i) const {
  const auto& f = field(i);
  if (!std::holds_alternative<ElementId>(f))
    throw ModelError("field " + std::to_string(i) + " of " + str() +
                     " is not an element reference");
  return std::get<ElementId>(f);
}

const Value& Value::field_value(std::size_t i) const {
  const auto& f = field(i);
  if (!std::holds_alternative<Value>(f))
    throw ModelError("field " + std::to_string(i) + " of " + str() +
                     " is not a plain value");
  return std::get<Value>(f);
}

bool Value::operator==(const Value& other) const {
  if (data_ == other.data_) return true;
  if (data_->hash != other.data_->hash) return false;
  return compare(*this, other) == 0;
}

std::size_t Value::hash() const { return data_->hash; }

namespace {

int cmp_size(std::size_t a, std::size_t b) { return a < b ? -1 : (a > b ? 1 : 0); }

template <typename T>
int cmp_ord(const T& a, const T& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

int field_compare(const ValueField& a, const ValueField& b) {
  const bool a_val = std::holds_alternative<Value>(a);
  const bool b_val = std::holds_alternative<Value>(b);
  if (a_val != b_val) return a_val ? -1 : 1;  // plain values before references
  if (a_val) return Value::compare(std::get<Value>(a), std::get<Value>(b));
  return cmp_ord(std::get<ElementId>(a).raw, std::get<ElementId>(b).raw);
}

}  // namespace

int Value::compare(const Value& a, const Value& b) {
  const int ka = static_cast<int>(a.kind());
  const int kb = static_cast<int>(b.kind());
  if (ka != kb) return ka < kb ? -1 : 1;
  switch (a.kind()) {
    case Kind::Bool:
      return cmp_ord(std::get<bool>(a.data_->payload), std::get<bool>(b.data_->payload));
    case Kind::Int:
      return cmp_ord(std::get<std::int64_t>(a.data_->payload),
                     std::get<std::int64_t>(b.data_->payload));
    case Kind::Symbol:
      return cmp_ord(std::get<std::string>(a.data_->payload),
                     std::get<std::string>(b.data_->payload));
    case Kind::Unit:
      return 0;
    case Kind::Constructed: {
      const auto& ca = std::get<ConstructedData>(a.data_->payload);
      const auto& cb = std::get<ConstructedData>(b.data_->payload);
      if (int c = cmp_ord(ca.ctor, cb.ctor); c != 0) return c;
      if (int c = cmp_size(ca.fields.size(), cb.fields.size()); c != 0) return c;
      for (std::size_t i = 0; i < ca.fields.size(); ++i) {
        if (int c = field_compare(ca.fields[i], cb.fields[i]); c != 0) return c;
      }
      return 0;
    }
  }
  return 0;
}

std::string Value::str() const {
  std::ostringstream out;
  switch (kind()) {
    case Kind::Bool: out << (as_bool() ? "true" : "false"); break;
    case Kind::Int: out << as_int(); break;
    case Kind::Symbol: out << symbol_name(); break;
    case Kind::Unit: out << "unit"; break;
    case Kind::Constructed: {
      out << ctor();
      if (num_fields() > 0) {
        out << "(";
        for (std::size_t i = 0; i < num_fields(); ++i) {
          if (i > 0) out << ", ";
          const auto& f = field(i);
          if (std::holds_alternative<Value>(f)) {
            out << std::get<Value>(f).str();
          } else {
            out << "@" << std::get<ElementId>(f).raw;
          }
        }
        out << ")";
      }
      break;
    }
  }
  return out.str();
}

const Value& ExtendedValue::value() const {
  if (is_star()) throw ModelError("Star has no underlying value");
  return *value_;
}

bool ExtendedValue::operator==(const ExtendedValue& other) const {
  if (is_star() || other.is_star()) return is_star() == other.is_star();
  return *value_ == *other.value_;
}

std::size_t ExtendedValue::hash() const {
  return is_star() ? 0x5157u : hash_combine(0x11, value_->hash());
}

std::string ExtendedValue::str() const { return is_star() ? "*" : value_->str(); }

int ExtendedValue::compare(const ExtendedValue& a, const ExtendedValue& b) {
  if (a.is_star() || b.is_star()) {
    if (a.is_star() == b.is_star()) return 0;
    return a.is_star() ? 1 : -1;  // Star last
  }
  return Value::compare(*a.value_, *b.value_);
}

}  // namespace lfi
