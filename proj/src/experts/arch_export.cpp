#include "ahip/experts/arch_export.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

const char* op_code(OpKind k) {
  switch (k) {
    case OpKind::kSkip: return "S";
    case OpKind::kReuse: return "R";
    case OpKind::kAdapt: return "A";
    case OpKind::kNew: return "N";
  }
  return "?";
}

OpKind parse_code(const std::string& s) {
  if (s == "S") return OpKind::kSkip;
  if (s == "R") return OpKind::kReuse;
  if (s == "A") return OpKind::kAdapt;
  if (s == "N") return OpKind::kNew;
  throw FormatError("architecture: unknown op '" + s + "'");
}

}  // namespace

std::string arch_to_machine(const std::vector<PathSpec>& paths) {
  std::string out;
  for (const auto& p : paths) {
    nlohmann::ordered_json rec;
    rec["task"] = p.task;
    rec["ops"] = nlohmann::ordered_json::array();
    for (const auto& op : p.ops) {
      nlohmann::ordered_json o;
      o["op"] = op_code(op.kind);
      if (op.target >= 0) o["target"] = op.target;
      if (op.created >= 0) o["created"] = op.created;
      rec["ops"].push_back(o);
    }
    out += rec.dump() + "\n";
  }
  return out;
}

std::vector<PathSpec> arch_from_machine(const std::string& text) {
  std::vector<PathSpec> paths;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      PathSpec p;
      p.task = rec.at("task").get<int>();
      for (const auto& o : rec.at("ops")) {
        GrowOp op;
        op.kind = parse_code(o.at("op").get<std::string>());
        op.target = o.value("target", -1);
        op.created = o.value("created", -1);
        p.ops.push_back(op);
      }
      paths.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("architecture: ") + e.what());
    }
  }
  return paths;
}

std::string arch_to_grid(const std::vector<PathSpec>& paths) {
  std::size_t depth = 0;
  std::size_t width = 2;
  for (const auto& p : paths) {
    depth = std::max(depth, p.ops.size());
    for (const auto& op : p.ops) width = std::max(width, cell_label(op).size());
  }
  width = std::max(width, std::to_string(depth).size() + 1) + 2;
  std::ostringstream out;
  out << "Task |";
  for (std::size_t l = 0; l < depth; ++l) {
    out << ' ' << std::left << std::setw(static_cast<int>(width)) << ("B" + std::to_string(l + 1));
  }
  out << "\n-----+" << std::string(depth * (width + 1), '-') << "\n";
  for (const auto& p : paths) {
    out << std::right << std::setw(4) << p.task << " |";
    for (const auto& op : p.ops) {
      out << ' ' << std::left << std::setw(static_cast<int>(width)) << cell_label(op);
    }
    out << "\n";
  }
  // Trailing padding is noise in diffs.
  std::string s = out.str();
  std::string trimmed;
  std::istringstream lines(s);
  std::string line;
  while (std::getline(lines, line)) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + "\n";
  }
  return trimmed;
}

}  // namespace ahip
