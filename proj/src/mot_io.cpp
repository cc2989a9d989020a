#include "qtrack/mot_io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qtrack {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(s, &consumed);
    // allow trailing whitespace only
    for (std::size_t i = consumed; i < s.size(); ++i) {
      if (!std::isspace(static_cast<unsigned char>(s[i]))) {
        throw std::invalid_argument("trailing characters");
      }
    }
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": non-numeric field '" + s + "'");
  }
}

std::string location(const std::string& name, int line_no) {
  return name + ":" + std::to_string(line_no);
}

bool blank(const std::string& line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

std::vector<MotLine> parse_mot(std::istream& in, const std::string& source_name) {
  std::vector<MotLine> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    const std::string where = location(source_name, line_no);
    if (fields.size() != 10) {
      throw std::invalid_argument(where + ": expected 10 comma-separated fields, got " +
                                  std::to_string(fields.size()));
    }
    MotLine m;
    m.frame = static_cast<int>(parse_number(fields[0], where));
    m.id = static_cast<int>(parse_number(fields[1], where));
    m.left = parse_number(fields[2], where);
    m.top = parse_number(fields[3], where);
    m.width = parse_number(fields[4], where);
    m.height = parse_number(fields[5], where);
    m.conf = parse_number(fields[6], where);
    m.x = parse_number(fields[7], where);
    m.y = parse_number(fields[8], where);
    m.z = parse_number(fields[9], where);
    if (m.frame < 1) throw std::invalid_argument(where + ": frame must be >= 1");
    out.push_back(m);
  }
  return out;
}

std::vector<MotLine> parse_mot_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("parse_mot: cannot open " + path);
  return parse_mot(is, path);
}

void write_mot(std::ostream& out, const std::vector<MotLine>& lines) {
  char buf[256];
  for (const auto& m : lines) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.2f,%.2f,%.2f,%.2f,%.2f,%d,%d,%d\n", m.frame, m.id,
                  m.left, m.top, m.width, m.height, m.conf, static_cast<int>(m.x),
                  static_cast<int>(m.y), static_cast<int>(m.z));
    out << buf;
  }
}

void write_mot_file(const std::string& path, const std::vector<MotLine>& lines) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_mot: cannot open " + path);
  write_mot(os, lines);
}

std::vector<GtLine> parse_mot_gt(std::istream& in, const std::string& source_name) {
  std::vector<GtLine> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    const std::string where = location(source_name, line_no);
    if (fields.size() != 6 && fields.size() != 9 && fields.size() != 10) {
      throw std::invalid_argument(where + ": expected 6, 9 or 10 fields, got " +
                                  std::to_string(fields.size()));
    }
    GtLine g;
    g.frame = static_cast<int>(parse_number(fields[0], where));
    g.id = static_cast<int>(parse_number(fields[1], where));
    g.left = parse_number(fields[2], where);
    g.top = parse_number(fields[3], where);
    g.width = parse_number(fields[4], where);
    g.height = parse_number(fields[5], where);
    if (fields.size() >= 9) {
      g.consider = parse_number(fields[6], where);
      g.cls = static_cast<int>(parse_number(fields[7], where));
      g.visibility = parse_number(fields[8], where);
    }
    if (g.frame < 1) throw std::invalid_argument(where + ": frame must be >= 1");
    out.push_back(g);
  }
  return out;
}

std::vector<GtLine> parse_mot_gt_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("parse_mot_gt: cannot open " + path);
  return parse_mot_gt(is, path);
}

std::vector<EvalFrame> frames_from_gt(const std::vector<GtLine>& lines, const GtFilter& filter) {
  int max_frame = 0;
  for (const auto& g : lines) max_frame = std::max(max_frame, g.frame);
  std::vector<EvalFrame> frames(static_cast<std::size_t>(max_frame));
  for (const auto& g : lines) {
    if (filter.require_consider && g.consider == 0.0) continue;
    if (!filter.classes.empty() && filter.classes.count(g.cls) == 0) continue;
    if (g.visibility < filter.min_visibility) continue;
    frames[static_cast<std::size_t>(g.frame - 1)].boxes.emplace_back(
        g.id, ltwh_to_center(g.left, g.top, g.width, g.height));
  }
  return frames;
}

std::vector<EvalFrame> frames_from_mot(const std::vector<MotLine>& lines) {
  int max_frame = 0;
  for (const auto& m : lines) max_frame = std::max(max_frame, m.frame);
  std::vector<EvalFrame> frames(static_cast<std::size_t>(max_frame));
  for (const auto& m : lines) {
    frames[static_cast<std::size_t>(m.frame - 1)].boxes.emplace_back(
        m.id, ltwh_to_center(m.left, m.top, m.width, m.height));
  }
  return frames;
}

std::vector<MotLine> results_to_mot(const std::vector<FrameResult>& results, double frame_w,
                                    double frame_h) {
  std::vector<MotLine> lines;
  for (const auto& fr : results) {
    for (const auto& e : fr.entries) {
      const PixelBox p = center_to_pixel_ltwh(e.box, frame_w, frame_h);
      MotLine m;
      m.frame = fr.frame + 1;  // MOT files are 1-based
      m.id = e.track_id;
      m.left = p.left;
      m.top = p.top;
      m.width = p.width;
      m.height = p.height;
      m.conf = e.confidence;
      lines.push_back(m);
    }
  }
  return lines;
}

std::vector<GtLine> truth_to_gt(const std::vector<FrameTruth>& truth, double frame_w,
                                double frame_h) {
  std::vector<GtLine> lines;
  for (const auto& ft : truth) {
    for (const auto& e : ft.entries) {
      const PixelBox p = center_to_pixel_ltwh(e.box, frame_w, frame_h);
      GtLine g;
      g.frame = ft.frame + 1;
      g.id = e.agent_id;
      g.left = p.left;
      g.top = p.top;
      g.width = p.width;
      g.height = p.height;
      g.consider = 1.0;
      g.cls = 1;
      g.visibility = e.visible_fraction;
      lines.push_back(g);
    }
  }
  return lines;
}

void write_gt_file(const std::string& path, const std::vector<GtLine>& lines) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_gt_file: cannot open " + path);
  char buf[256];
  for (const auto& g : lines) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.2f,%.2f,%.2f,%.2f,%d,%d,%.2f\n", g.frame, g.id, g.left,
                  g.top, g.width, g.height, static_cast<int>(g.consider), g.cls, g.visibility);
    os << buf;
  }
}

}  // namespace qtrack
