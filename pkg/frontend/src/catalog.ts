// Thin client for the catalog HTTP API.

import type { CatalogEntry, Manifest } from "./types.js";

export class CatalogError extends Error {}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class CatalogClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new CatalogError(`${path} answered ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listExperiences(): Promise<CatalogEntry[]> {
    return this.getJson("/api/experiences");
  }

  getManifest(storyId: string): Promise<Manifest> {
    return this.getJson(`/api/experiences/${storyId}`);
  }

  getVersion(storyId: string): Promise<{ version: number; content_hash: string }> {
    return this.getJson(`/api/experiences/${storyId}/version`);
  }

  async getBundle(storyId: string, version?: number): Promise<Uint8Array> {
    const suffix = version === undefined ? "" : `?version=${version}`;
    const response = await this.fetchFn(
      `${this.baseUrl}/api/experiences/${storyId}/bundle${suffix}`,
    );
    if (!response.ok) {
      throw new CatalogError(`bundle download answered ${response.status}`);
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  assetUrl(storyId: string, path: string): string {
    return `${this.baseUrl}/api/experiences/${storyId}/assets/${path}`;
  }
}
