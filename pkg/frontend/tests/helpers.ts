/** A routing fetch stub that records every request it serves. */

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
  headers: Record<string, string>;
}

export type Route = (req: RecordedRequest) => {
  status?: number;
  json?: unknown;
  text?: string;
};

export function mockFetch(routes: Record<string, Route>) {
  const requests: RecordedRequest[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    const req: RecordedRequest = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      headers: (init?.headers as Record<string, string>) ?? {},
    };
    requests.push(req);
    for (const [prefix, route] of Object.entries(routes)) {
      const [method, path] = prefix.split(" ", 2);
      if (req.method === method && url.includes(path)) {
        const result = route(req);
        const status = result.status ?? 200;
        const body = result.text ?? JSON.stringify(result.json ?? {});
        return new Response(body, {
          status,
          headers: { "Content-Type": result.text ? "text/plain" : "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ code: "not_found", message: url }), {
      status: 404,
    });
  };
  return { impl, requests };
}
