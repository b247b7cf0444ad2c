#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sheetkit {

/// One file seeded into a workspace. The file flagged `initial_workbook`
/// is stored as the model-facing data.xlsx regardless of its source name;
/// auxiliary files keep their original names.
struct SeedFile {
    std::string name;
    std::string bytes;
    bool initial_workbook = false;
};

struct ManifestEntry {
    std::string name;
    std::string sha256;
    std::uint64_t size = 0;
};

struct Workspace {
    std::string id;
    std::filesystem::path dir;
    std::vector<ManifestEntry> manifest;
};

/// Filesystem-backed pool of per-rollout workspaces under a single root.
///
/// Layout: `<root>/<id>/` holds data.xlsx, any auxiliary files, and
/// `.manifest.json` (written last — its presence marks the workspace ready).
/// A sibling `<root>/<id>.lock` file serializes seeding; locks older than
/// the TTL are treated as abandoned and broken.
class WorkspaceManager {
public:
    explicit WorkspaceManager(std::filesystem::path root,
                              std::chrono::seconds lock_ttl = std::chrono::seconds(300));

    /// Creates `<root>/<id>` and copies the seed files in. Exactly one seed
    /// must be flagged as the initial workbook or this throws
    /// Error("no initial workbook"). Safe to race: concurrent calls with the
    /// same id yield one seeder; the others wait for the manifest and verify
    /// the digests match their own seeds.
    Workspace create_and_seed(const std::string& id, const std::vector<SeedFile>& seeds);

    /// Fresh random workspace id (collision-resistant hex token).
    static std::string new_id();

    /// True once the workspace's manifest exists (seeding committed).
    bool ready(const std::string& id) const;

    /// Loads the committed manifest. Throws Error("unknown workspace") when
    /// the workspace does not exist or has not committed.
    Workspace open(const std::string& id) const;

    /// Maps a workspace-relative path to an absolute one, guaranteed to stay
    /// inside the workspace directory. Rejects absolute paths, `..`
    /// components, and symlink escapes; throws Error("unknown workspace")
    /// for ids without a committed manifest. Never falls back to a shared
    /// location.
    std::filesystem::path resolve_path(const std::string& id, std::string_view relative) const;

    /// Deletes the workspace directory and its lock. Idempotent.
    void release(const std::string& id);

    const std::filesystem::path& root() const { return root_; }
    std::chrono::seconds lock_ttl() const { return lock_ttl_; }

private:
    std::filesystem::path dir_for(const std::string& id) const;
    std::filesystem::path lock_for(const std::string& id) const;
    bool acquire_lock(const std::string& id) const;

    std::filesystem::path root_;
    std::chrono::seconds lock_ttl_;
};

} // namespace sheetkit
