#include "sheetkit/workspace.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <system_error>
#include <thread>
#include <utility>

#include <json.hpp>
#include "sheetkit/error.hpp"
#include "sheetkit/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sheetkit {

namespace {

constexpr const char* kManifestName = ".manifest.json";
constexpr const char* kWorkbookName = "data.xlsx";

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    }
    return true;
}

bool valid_seed_name(const std::string& name) {
    if (name.empty() || name == kManifestName) return false;
    fs::path p(name);
    if (p.is_absolute()) return false;
    for (const fs::path& part : p) {
        if (part == ".." || part == ".") return false;
    }
    return true;
}

/// Stored name of a seed inside the workspace.
std::string stored_name(const SeedFile& seed) {
    return seed.initial_workbook ? std::string(kWorkbookName) : seed.name;
}

json manifest_json(const std::string& id, const std::vector<ManifestEntry>& entries) {
    json files = json::array();
    for (const ManifestEntry& e : entries)
        files.push_back({{"name", e.name}, {"sha256", e.sha256}, {"size", e.size}});
    return json{{"id", id}, {"created_ms", now_millis()}, {"files", files}};
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
    json doc = json::parse(text);
    std::vector<ManifestEntry> out;
    for (const json& f : doc.at("files")) {
        out.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>(),
                       f.at("size").get<std::uint64_t>()});
    }
    return out;
}

/// The committed manifest must describe exactly the seeds we were handed;
/// anything else means two callers used one id for different tasks.
void verify_seeds_against(const std::vector<ManifestEntry>& manifest,
                          const std::vector<SeedFile>& seeds) {
    if (manifest.size() != seeds.size())
        throw Error("workspace corruption: manifest does not match seed files");
    for (const SeedFile& seed : seeds) {
        const std::string name = stored_name(seed);
        const ManifestEntry* found = nullptr;
        for (const ManifestEntry& e : manifest) {
            if (e.name == name) {
                found = &e;
                break;
            }
        }
        if (!found || found->sha256 != sha256_hex(seed.bytes))
            throw Error("workspace corruption: digest mismatch for " + name);
    }
}

} // namespace

WorkspaceManager::WorkspaceManager(fs::path root, std::chrono::seconds lock_ttl)
    : root_(std::move(root)), lock_ttl_(lock_ttl) {
    fs::create_directories(root_);
}

std::string WorkspaceManager::new_id() { return "ws-" + token_hex(12); }

fs::path WorkspaceManager::dir_for(const std::string& id) const { return root_ / id; }

fs::path WorkspaceManager::lock_for(const std::string& id) const { return root_ / (id + ".lock"); }

bool WorkspaceManager::acquire_lock(const std::string& id) const {
    const fs::path lock = lock_for(id);
    int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
        ::close(fd);
        return true;
    }
    if (errno != EEXIST) throw Error("cannot create lock " + lock.string());
    // Break locks abandoned longer than the TTL.
    std::error_code ec;
    auto mtime = fs::last_write_time(lock, ec);
    if (!ec && mtime + lock_ttl_ < fs::file_time_type::clock::now()) {
        fs::remove(lock, ec);
        fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            ::close(fd);
            return true;
        }
    }
    return false;
}

Workspace WorkspaceManager::create_and_seed(const std::string& id,
                                            const std::vector<SeedFile>& seeds) {
    if (!valid_id(id)) throw Error("invalid workspace id: " + id);
    int initials = 0;
    for (const SeedFile& s : seeds) {
        if (s.initial_workbook) ++initials;
        if (!valid_seed_name(stored_name(s))) throw Error("invalid seed file name: " + s.name);
    }
    if (initials != 1) throw Error("no initial workbook");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (stored_name(seeds[i]) == stored_name(seeds[j]))
                throw Error("duplicate seed file name: " + stored_name(seeds[i]));

    const fs::path dir = dir_for(id);
    const fs::path manifest_path = dir / kManifestName;

    const auto deadline = std::chrono::steady_clock::now() + lock_ttl_ + std::chrono::seconds(5);
    while (true) {
        if (fs::exists(manifest_path)) {
            Workspace ws = open(id);
            verify_seeds_against(ws.manifest, seeds);
            return ws;
        }
        if (acquire_lock(id)) break;
        if (std::chrono::steady_clock::now() > deadline)
            throw Error("workspace seeding timed out for " + id);
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    // Lock held from here; always drop it, even on failure.
    try {
        if (fs::exists(manifest_path)) {
            // Another seeder committed between our existence check and the lock.
            fs::remove(lock_for(id));
            Workspace ws = open(id);
            verify_seeds_against(ws.manifest, seeds);
            return ws;
        }

        fs::create_directories(dir);
        Workspace ws;
        ws.id = id;
        ws.dir = dir;
        for (const SeedFile& seed : seeds) {
            const std::string name = stored_name(seed);
            const fs::path target = dir / name;
            fs::create_directories(target.parent_path());
            write_file_atomic(target, seed.bytes);
            ws.manifest.push_back({name, sha256_hex(seed.bytes), seed.bytes.size()});
        }
        // The manifest is the commit point: readers treat its presence as "ready".
        write_file_atomic(manifest_path, manifest_json(id, ws.manifest).dump(2));
        fs::remove(lock_for(id));
        return ws;
    } catch (...) {
        std::error_code ec;
        fs::remove(lock_for(id), ec);
        throw;
    }
}

bool WorkspaceManager::ready(const std::string& id) const {
    return valid_id(id) && fs::exists(dir_for(id) / kManifestName);
}

Workspace WorkspaceManager::open(const std::string& id) const {
    if (!valid_id(id)) throw Error("unknown workspace: " + id);
    const fs::path manifest_path = dir_for(id) / kManifestName;
    if (!fs::exists(manifest_path)) throw Error("unknown workspace: " + id);
    Workspace ws;
    ws.id = id;
    ws.dir = dir_for(id);
    try {
        ws.manifest = parse_manifest(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw Error("workspace corruption: unreadable manifest for " + id);
    }
    return ws;
}

fs::path WorkspaceManager::resolve_path(const std::string& id, std::string_view relative) const {
    if (!ready(id)) throw Error("unknown workspace: " + id);
    fs::path rel{std::string(relative)};
    if (relative.empty() || rel.is_absolute())
        throw Error("path escapes workspace: " + std::string(relative));
    for (const fs::path& part : rel) {
        if (part == "..") throw Error("path escapes workspace: " + std::string(relative));
    }
    const fs::path dir = dir_for(id);
    fs::path abs = (dir / rel).lexically_normal();
    // Lexical containment…
    const auto rel_to_dir = abs.lexically_relative(dir);
    if (rel_to_dir.empty() || rel_to_dir.native().rfind("..", 0) == 0)
        throw Error("path escapes workspace: " + std::string(relative));
    // …and physical containment: symlinks inside the workspace must not point out.
    std::error_code ec;
    fs::path resolved = fs::weakly_canonical(abs, ec);
    if (!ec) {
        fs::path base = fs::weakly_canonical(dir, ec);
        if (!ec) {
            const auto resolved_rel = resolved.lexically_relative(base);
            if (resolved_rel.empty() || resolved_rel.native().rfind("..", 0) == 0)
                throw Error("path escapes workspace: " + std::string(relative));
        }
    }
    return abs;
}

void WorkspaceManager::release(const std::string& id) {
    if (!valid_id(id)) return;
    std::error_code ec;
    fs::remove_all(dir_for(id), ec);
    fs::remove(lock_for(id), ec);
}

} // namespace sheetkit
