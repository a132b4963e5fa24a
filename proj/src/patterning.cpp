#include "fibsim/patterning.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "fibsim/constants.hpp"
#include "fibsim/io.hpp"
#include "json.hpp"

namespace fibsim {

double ExposurePlan::total_exposure_s() const {
  int64_t ns = 0;
  for (const auto& s : spots) ns += s.dwell_ns;
  return static_cast<double>(ns) * 1e-9;
}

double dwell_seconds(double expected_ions, int charge, double beam_current_a) {
  if (expected_ions <= 0) throw std::invalid_argument("dwell: expected_ions must be > 0");
  if (charge < 1) throw std::invalid_argument("dwell: charge must be >= 1");
  if (beam_current_a <= 0) throw std::invalid_argument("dwell: current must be > 0");
  return expected_ions * charge * kElementaryCharge / beam_current_a;
}

int64_t dwell_ns_for(double expected_ions, int charge, double beam_current_a) {
  double ns = dwell_seconds(expected_ions, charge, beam_current_a) * 1e9;
  if (ns >= 9.2e18) throw std::invalid_argument("dwell: exceeds ns range");
  int64_t q = std::llround(ns);
  return q > 0 ? q : 1;  // sub-ns dwell still exposes for one clock tick
}

double fluence_to_ions(double fluence_cm2, double area_nm2) {
  if (fluence_cm2 < 0 || area_nm2 < 0)
    throw std::invalid_argument("fluence_to_ions: negative input");
  return fluence_cm2 * area_nm2 * 1e-14;  // 1 nm^2 = 1e-14 cm^2
}

ExposurePlan plan_grid(const std::vector<double>& row_expected_ions, int cols,
                       double pitch_nm, const FilteredBeam& beam, uint64_t seed,
                       const std::string& created) {
  if (row_expected_ions.empty()) throw std::invalid_argument("plan_grid: no rows");
  if (cols < 1) throw std::invalid_argument("plan_grid: cols must be >= 1");
  if (pitch_nm <= beam.spot_fwhm_nm)
    throw std::invalid_argument("plan_grid: pitch <= spot fwhm, spots overlap");

  ExposurePlan plan;
  plan.header.species = beam.species.label;
  plan.header.charge = beam.species.charge;
  plan.header.beam_current_a = beam.current_a;
  plan.header.energy_kev = quantize6(beam.landing_energy_kev);
  plan.header.spot_fwhm_nm = quantize6(beam.spot_fwhm_nm);
  plan.header.seed = seed;
  plan.header.created = created;

  int rows = static_cast<int>(row_expected_ions.size());
  double span = pitch_nm * std::max(rows - 1, cols - 1);
  plan.header.write_field_nm = quantize6(span > 0 ? span : pitch_nm);

  plan.spots.reserve(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    double n_bar = row_expected_ions[r];
    int64_t dwell = dwell_ns_for(n_bar, beam.species.charge, beam.current_a);
    for (int c = 0; c < cols; ++c) {
      ExposureSpot s;
      s.x_nm = quantize6(c * pitch_nm);
      s.y_nm = quantize6(r * pitch_nm);
      s.species = beam.species.label;
      s.charge = beam.species.charge;
      s.energy_kev = plan.header.energy_kev;
      s.expected_ions = quantize6(n_bar);
      s.dwell_ns = dwell;
      plan.spots.push_back(std::move(s));
    }
  }
  return plan;
}

namespace {

constexpr char kColumns[] = "x_nm,y_nm,species,charge,energy_keV,expected_ions,dwell_us";

std::string dwell_us_text(int64_t dwell_ns) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%" PRId64 ".%03" PRId64, dwell_ns / 1000,
                dwell_ns % 1000);
  return buf;
}

int64_t parse_dwell_us(const std::string& text, int line_no) {
  auto fail = [line_no] {
    throw std::runtime_error("plan parse error, line " + std::to_string(line_no) +
                             ": bad dwell_us field");
  };
  auto dot = text.find('.');
  if (dot == std::string::npos || text.size() - dot - 1 != 3) fail();
  int64_t us = 0, frac = 0;
  try {
    size_t used = 0;
    us = std::stoll(text.substr(0, dot), &used);
    if (used != dot) fail();
    frac = std::stoll(text.substr(dot + 1), &used);
    if (used != 3) fail();
  } catch (const std::logic_error&) {
    fail();
  }
  if (us < 0 || frac < 0 || frac > 999) fail();
  return us * 1000 + frac;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || !std::isfinite(v))
    throw std::runtime_error("plan parse error, line " + std::to_string(line_no) +
                             ": bad " + std::string(what) + " field");
  return v;
}

}  // namespace

std::string format_plan(const ExposurePlan& plan) {
  nlohmann::json h;
  h["species"] = plan.header.species;
  h["charge"] = plan.header.charge;
  h["beam_current_a"] = plan.header.beam_current_a;
  h["energy_kev"] = plan.header.energy_kev;
  h["spot_fwhm_nm"] = plan.header.spot_fwhm_nm;
  h["write_field_nm"] = plan.header.write_field_nm;
  h["created"] = plan.header.created;
  h["seed"] = plan.header.seed;
  h["config"] = plan.header.config;

  std::ostringstream os;
  os << "# " << h.dump() << "\n" << kColumns << "\n";
  for (const auto& s : plan.spots) {
    os << format_g6(s.x_nm) << ',' << format_g6(s.y_nm) << ',' << s.species << ','
       << s.charge << ',' << format_g6(s.energy_kev) << ','
       << format_g6(s.expected_ions) << ',' << dwell_us_text(s.dwell_ns) << "\n";
  }
  return os.str();
}

void write_plan(const std::string& path, const ExposurePlan& plan) {
  write_file_atomic(path, format_plan(plan));
}

ExposurePlan parse_plan(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&line_no](const std::string& why) {
    throw std::runtime_error("plan parse error, line " + std::to_string(line_no) +
                             ": " + why);
  };

  ExposurePlan plan;
  ++line_no;
  if (!std::getline(in, line)) fail("empty file");
  if (line.rfind("# ", 0) != 0) fail("missing '# ' JSON header");
  nlohmann::json h = nlohmann::json::parse(line.substr(2), nullptr, false);
  if (h.is_discarded() || !h.is_object()) fail("malformed JSON header");
  try {
    plan.header.species = h.at("species").get<std::string>();
    plan.header.charge = h.at("charge").get<int>();
    plan.header.beam_current_a = h.at("beam_current_a").get<double>();
    plan.header.energy_kev = h.at("energy_kev").get<double>();
    plan.header.spot_fwhm_nm = h.at("spot_fwhm_nm").get<double>();
    plan.header.write_field_nm = h.at("write_field_nm").get<double>();
    plan.header.created = h.at("created").get<std::string>();
    plan.header.seed = h.at("seed").get<uint64_t>();
    plan.header.config = h.value("config", std::string());
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("header: ") + e.what());
  }
  if (plan.header.beam_current_a <= 0) fail("header: beam current must be > 0");

  ++line_no;
  if (!std::getline(in, line)) fail("missing column header");
  if (line != kColumns) fail("unexpected column header");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) fail("blank line");
    auto f = split_csv(line);
    if (f.size() != 7) fail("expected 7 fields, got " + std::to_string(f.size()));
    ExposureSpot s;
    s.x_nm = parse_number(f[0], line_no, "x_nm");
    s.y_nm = parse_number(f[1], line_no, "y_nm");
    s.species = f[2];
    s.charge = static_cast<int>(parse_number(f[3], line_no, "charge"));
    s.energy_kev = parse_number(f[4], line_no, "energy_keV");
    s.expected_ions = parse_number(f[5], line_no, "expected_ions");
    s.dwell_ns = parse_dwell_us(f[6], line_no);
    if (s.dwell_ns <= 0) fail("dwell must be > 0");
    if (s.x_nm < 0 || s.y_nm < 0 || s.x_nm > plan.header.write_field_nm ||
        s.y_nm > plan.header.write_field_nm)
      fail("spot outside write field");
    plan.spots.push_back(std::move(s));
  }
  return plan;
}

ExposurePlan read_plan(const std::string& path) { return parse_plan(read_file(path)); }

}  // namespace fibsim
