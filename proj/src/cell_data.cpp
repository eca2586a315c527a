#include "mew/cell_data.hpp"

#include "mew/csv.hpp"
#include "mew/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace mew {

namespace {

std::string row_col(std::size_t row, const std::string& col) {
  return "row " + std::to_string(row) + ", column \"" + col + "\"";
}

}  // namespace

bool CellTable::fully_typed() const {
  if (cell_type.size() != cell_ids.size()) return false;
  for (const auto& t : cell_type) {
    if (!t) return false;
  }
  return true;
}

Matrix CellTable::features() const {
  const std::size_t n = size_n(), fb = biomarker_dim();
  Matrix out(n, fb + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < fb; ++j) out(i, j) = biomarkers(i, j);
    out(i, fb) = size[i];
  }
  return out;
}

std::vector<Point> CellTable::points() const {
  std::vector<Point> out(size_n());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {x[i], y[i]};
  return out;
}

void validate_cell_table(const CellTable& t) {
  const std::size_t n = t.size_n();
  if (n == 0) throw Error(Errc::EmptyTable, "image " + t.image_id + " has no cells");
  if (t.x.size() != n || t.y.size() != n || t.size.size() != n || t.biomarkers.rows() != n ||
      (!t.cell_type.empty() && t.cell_type.size() != n) ||
      t.biomarker_names.size() != t.biomarkers.cols()) {
    throw Error(Errc::DimMismatch, "image " + t.image_id + ": inconsistent column lengths");
  }
  std::unordered_set<std::int64_t> seen;
  seen.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = i + 1;
    if (!seen.insert(t.cell_ids[i]).second) {
      throw Error(Errc::DuplicateCellId, "duplicate cell_id " + std::to_string(t.cell_ids[i]) +
                                             " at row " + std::to_string(row));
    }
    if (!std::isfinite(t.x[i])) throw Error(Errc::NonFiniteValue, row_col(row, "x"));
    if (!std::isfinite(t.y[i])) throw Error(Errc::NonFiniteValue, row_col(row, "y"));
    if (!std::isfinite(t.size[i])) throw Error(Errc::NonFiniteValue, row_col(row, "size"));
    if (t.size[i] <= 0.0) {
      throw Error(Errc::InvalidValue, row_col(row, "size") + ": size must be positive");
    }
    for (std::size_t j = 0; j < t.biomarker_dim(); ++j) {
      if (!std::isfinite(t.biomarkers(i, j))) {
        throw Error(Errc::NonFiniteValue, row_col(row, t.biomarker_names[j]));
      }
    }
  }
}

CellTable parse_cell_table(std::istream& in, const ColumnMapping& schema, std::string image_id) {
  CellTable t;
  t.image_id = std::move(image_id);
  std::string line;
  if (!csv::next_line(in, line)) {
    throw Error(Errc::EmptyTable, "image " + t.image_id + ": missing header");
  }
  const auto header = csv::split_record(line);
  auto find = [&](const std::string& name) -> int {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return static_cast<int>(c);
    }
    return -1;
  };
  auto require = [&](const std::string& name) {
    const int c = find(name);
    if (c < 0) {
      throw Error(Errc::MissingColumn, "image " + t.image_id + ": missing column \"" + name + "\"");
    }
    return static_cast<std::size_t>(c);
  };
  const std::size_t c_id = require(schema.id);
  const std::size_t c_x = require(schema.x);
  const std::size_t c_y = require(schema.y);
  const std::size_t c_size = require(schema.size);
  const int c_type = schema.cell_type.empty() ? -1 : find(schema.cell_type);

  std::vector<std::size_t> c_bio;
  if (schema.biomarkers.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == c_id || c == c_x || c == c_y || c == c_size || static_cast<int>(c) == c_type) continue;
      c_bio.push_back(c);
      t.biomarker_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.biomarkers) {
      c_bio.push_back(require(name));
      t.biomarker_names.push_back(name);
    }
  }

  std::vector<double> bio;
  std::size_t row = 0;
  while (csv::next_line(in, line)) {
    ++row;
    const auto fields = csv::split_record(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::MissingColumn, "image " + t.image_id + ": row " + std::to_string(row) +
                                           " has " + std::to_string(fields.size()) +
                                           " fields, header has " + std::to_string(header.size()));
    }
    auto number = [&](std::size_t c) {
      double v;
      if (!csv::parse_double(fields[c], v)) {
        throw Error(Errc::NonFiniteValue, row_col(row, header[c]) + ": not a number");
      }
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, row_col(row, header[c]));
      return v;
    };
    std::int64_t id = 0;
    {
      const std::string& f = fields[c_id];
      auto res = std::from_chars(f.data(), f.data() + f.size(), id);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(Errc::InvalidValue, row_col(row, header[c_id]) + ": not an integer");
      }
    }
    t.cell_ids.push_back(id);
    t.x.push_back(number(c_x));
    t.y.push_back(number(c_y));
    t.size.push_back(number(c_size));
    for (auto c : c_bio) bio.push_back(number(c));
    if (c_type >= 0) {
      const std::string& f = fields[static_cast<std::size_t>(c_type)];
      t.cell_type.push_back(f.empty() ? std::nullopt : std::optional<std::string>(f));
    }
  }
  t.biomarkers = Matrix(t.cell_ids.size(), c_bio.size());
  std::copy(bio.begin(), bio.end(), t.biomarkers.storage().begin());
  validate_cell_table(t);
  return t;
}

CellTable load_cell_table(const std::filesystem::path& path, const ColumnMapping& schema,
                          std::string image_id) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open cell table " + path.string());
  if (image_id.empty()) image_id = path.stem().string();
  return parse_cell_table(in, schema, std::move(image_id));
}

void write_cell_table(const std::filesystem::path& path, const CellTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << "cell_id,x,y,size";
  for (const auto& b : t.biomarker_names) out << ',' << b;
  if (t.has_cell_type_column()) out << ",cell_type";
  out << '\n';
  for (std::size_t i = 0; i < t.size_n(); ++i) {
    out << t.cell_ids[i] << ',' << csv::format_double(t.x[i]) << ','
        << csv::format_double(t.y[i]) << ',' << csv::format_double(t.size[i]);
    for (std::size_t j = 0; j < t.biomarker_dim(); ++j) {
      out << ',' << csv::format_double(t.biomarkers(i, j));
    }
    if (t.has_cell_type_column()) out << ',' << t.cell_type[i].value_or("");
    out << '\n';
  }
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

int TypeCodebook::code(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, static_cast<int>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

int TypeCodebook::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> encode_cell_types(const CellTable& table, TypeCodebook& book) {
  std::vector<int> codes(table.size_n(), -1);
  if (!table.has_cell_type_column()) return codes;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (table.cell_type[i]) codes[i] = book.code(*table.cell_type[i]);
  }
  return codes;
}

}  // namespace mew
