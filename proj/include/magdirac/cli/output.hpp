/** \file output.hpp
 *
 *  \brief CSV and JSON writers. Every file carries the version stamp and the resolved configuration;
 *         files appear atomically (written to a temporary sibling, then renamed).
 */
#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "magdirac/cli/config.hpp"

namespace magdirac::cli {

/// Fixed 17-significant-digit rendering, so CSV bodies round-trip and diff byte-for-byte.
inline std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

inline void write_atomic(std::filesystem::path const& path, std::string const& content)
{
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

class CsvTable
{
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    CsvTable& row(std::vector<std::string> cells)
    {
        if (cells.size() != columns_.size()) {
            throw std::logic_error("CSV row width does not match the header");
        }
        rows_.push_back(std::move(cells));
        return *this;
    }

    std::string render(ScenarioConfig const& cfg) const
    {
        std::ostringstream out;
        out << "# magdirac " << version << "\n";
        out << "# config: " << to_json(cfg).dump() << "\n";
        out << join(columns_) << "\n";
        for (auto const& r : rows_) {
            out << join(r) << "\n";
        }
        return out.str();
    }

    std::size_t size() const { return rows_.size(); }

private:
    static std::string join(std::vector<std::string> const& cells)
    {
        std::string s;
        for (std::size_t k = 0; k < cells.size(); ++k) {
            s += (k ? "," : "") + cells[k];
        }
        return s;
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

inline bool wants(ScenarioConfig const& cfg, std::string const& format)
{
    return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), format) != cfg.output.formats.end();
}

inline void write_csv(std::filesystem::path const& path, CsvTable const& table, ScenarioConfig const& cfg)
{
    if (wants(cfg, "csv")) {
        write_atomic(path, table.render(cfg));
    }
}

inline void write_json(std::filesystem::path const& path, nlohmann::ordered_json body, ScenarioConfig const& cfg)
{
    if (!wants(cfg, "json")) {
        return;
    }
    nlohmann::ordered_json doc;
    doc["magdirac_version"] = version;
    doc["config"]           = to_json(cfg);
    for (auto it = body.begin(); it != body.end(); ++it) {
        doc[it.key()] = it.value();
    }
    write_atomic(path, doc.dump(2) + "\n");
}

/// Numeric CSV rows with `columns` fields; '#' comments and a non-numeric header line are skipped.
inline std::vector<std::vector<double>> read_numeric_csv(std::filesystem::path const& path, std::size_t columns)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open table");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
                    numeric = false;
                }
            } catch (std::exception const&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (rows.empty()) {
                continue;  // header
            }
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": non-numeric row");
        }
        if (row.size() != columns) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(columns) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ConfigError(path.string() + ": table has no rows");
    }
    return rows;
}

}  // namespace magdirac::cli
