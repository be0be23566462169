#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vdpm {

// "key = value" files with '#' comments. Keys are dotted paths; stored
// sorted, so the serialized form is canonical and hashable.
class KeyValue {
 public:
  KeyValue() = default;

  static KeyValue load(const std::string& path);
  static KeyValue parse(const std::string& text);
  void save(const std::string& path) const;
  std::string to_text() const;

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& def = "") const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_list(const std::string& key) const;  // comma separated

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, long long v);
  void set_bool(const std::string& key, bool v);

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

struct TrainConfig;
struct AdaptConfig;
struct DomainSpec;

// Config binding: read under "train." / "adapt." / given prefix, with the
// struct defaults for anything absent.
TrainConfig train_config_from(const KeyValue& kv);
AdaptConfig adapt_config_from(const KeyValue& kv);
DomainSpec domain_spec_from(const KeyValue& kv, const std::string& prefix = "");
KeyValue domain_spec_to_keyvalue(const DomainSpec& spec, const std::string& prefix = "");

}  // namespace vdpm
