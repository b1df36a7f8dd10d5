"""Prompt templates for every LLM-backed step in the toolkit.

Templates carry named slots written as {slot}. `render` substitutes only the
declared slots via literal replacement (templates contain JSON braces, so
str.format is unusable). Pipeline tests assert byte-level fidelity: an issued
prompt must equal its template with only the slot contents changed.
"""

from __future__ import annotations

from .errors import UsageError


def render(template: str, **slots: str) -> str:
    """Replace each declared {slot} with its value; unknown slots are an error."""
    out = template
    for name, value in slots.items():
        token = "{" + name + "}"
        if token not in out:
            raise UsageError(f"template has no slot {token}")
        out = out.replace(token, value)
    return out


FUZZIFY_PROMPT = """You are a query analysis and transformation expert. Your task is to receive an "original query" and perform the following operations:
1. Simplify Query: Convert the original query into a more concise and broader 'simple_query'. This 'simple_query' should only retain the most core, high-level topic of the original query.
2. Extract Intent: Convert all the information that was simplified or removed into a 'missing_intent' list. This list should be expressed from the user's first-person perspective (e.g., using "I want to..." or "I need to...").

# Original Query
{task}

# Important Rules
1. Maintain a Valid Query Format: The 'simple_query' must remain a well-formed user request. It should preserve the original's core action (e.g., "analyze," "collect," "research") or question structure (e.g., "what is," "how does"). Do not reduce it to a mere topic phrase or a few keywords. For example, simplify "Collect data on X and analyze Y" to "Research the relationship between X and Y," not just "X and Y relationship."
2. If the original query is already very short, specific, and has no extra details that can be simplified (e.g., it is a single, direct technical question), then return an empty string for 'simple_query' and an empty list for 'missing_intent'.
3. Your output language must be the same as the original query's language. For instance, if the original query is in English, your output for the simple query and missing intents must also be in English. Conversely, if the original query is in Chinese, your output must also be in Chinese.

# Examples
1.
Original Query: Collect and compile the actual income and financial status of China's 9 social strata, with particular focus on researching and identifying the characteristics of China's middle class, including the actual number of middle-class individuals, their financial capacity, etc.

Simple Query: Collect and compile the economic situation of China's 9 social strata

Missing Intent: [I want to collect the actual income and financial status of China's 9 social strata, I want to particularly research the characteristics of China's middle class, including the actual number of middle-class individuals, their financial capacity, etc.]

2.
Original Query: Research the relationship between investment and lending relationships among domestic financial institutions and systemic risk? Model the lending relationships and risks at different levels or types

Simple Query: Research the correlations among domestic financial institutions

Missing Intent: [I want to research correlations including the connection between investment and lending relationships and systemic risk, I want to model the lending relationships and risks at different levels or types]

3.
Original Query: Collect and compile relevant information on the current top ten insurance companies by international comprehensive strength, conduct a horizontal comparison of various dimensions including each company's financing situation, credibility, growth rate over the past five years, actual dividends, future development potential in China, etc., and evaluate for me the 2-3 companies most likely to rank high in assets in the future

Simple Query: Collect and compile relevant information on the current top ten insurance companies by international comprehensive strength

Missing Intent: [I want to conduct a horizontal comparison of various dimensions including each company's financing situation, credibility, growth rate over the past five years, actual dividends, future development potential in China, etc., I want an evaluation of the 2-3 companies most likely to rank high in assets in the future]
# Output Format: You must strictly adhere to the following JSON format for your response.
{
  "simple_query": "SIMPLE_QUERY_STRING",
  "missing_intent": [
    "MISSING_INTENT_1",
    "MISSING_INTENT_2"
  ]
}"""


DEEP_INTENT_PROMPT = """You are an intelligent assistant specializing in converting evaluation rubrics into a clear, direct list of user intents.
# Task
Given a JSON-formatted rubric below that describes the elements of a high-quality report. You will convert these evaluation criteria into a list of intents from a first-person user's perspective.

# Rubrics
{rubrics}

# Important Rules
1. Combine each criterion and its explanation to distill a specific, clear user intent. Ensure that all key information points from the original rubric are included.
2. Use the first-person perspective, emulating a user who knows what they want. For example, use phrases like "I want the report to...", "The report needs to clarify...", and "Please ensure...".
3. Your output language must match the language of the original query. That is, if the original query is in English, your output intents must also be in English. Conversely, if the original query is in Chinese, your output intents must also be in Chinese.

# Output Format: Please strictly adhere to the following JSON format for the result. List all criteria from the rubric in their original order.
{
    "comprehensiveness": [INTENT_1, INTENT_2, ...],
    "insight": [INTENT_1, INTENT_2, ...],
}"""


BASE_GRAPH_PROMPT = """# Background
The goal of the Deep Research Agent is to generate a comprehensive, in-depth, high-quality research report based on a single task request from the user. To ensure the correct direction before research begins, the agent has the capability to conduct multiple rounds of follow-up questions with the user before executing the task, uncovering potential intents that the user has not explicitly expressed in the task request. These follow-up questions are organized into a "Clarification Directed Acyclic Graph" structure, which gradually refines and clarifies task requirements through interaction with the user.

# Task
Your core task is to design the initial version of this clarification Directed Acyclic Graph based on the given original coarse-grained task and the list of user's potential needs.
Specific steps are as follows:
1. Design Questions and Options: Iterate through the user's potential needs list, converting each item into a clear and specific clarification question directed at the user, along with 2-3 selectable options. Options can be extracted from text such as "for example," "including," "X and Y," "X or Y" within that item. For example, the intent item "want to collect the actual income and financial status of China's 9 social strata" can be extracted into the question "Which aspect of the economic situation of China's 9 social strata are you more concerned about?" with two options: "actual income" and "financial status."
    - Note: All option content must originate from the user's potential needs, which means each option represents a valid user requirement. You cannot fabricate content beyond the user's potential needs as options.
2. Build Clarification Directed Acyclic Graph Structure: Organize all questions and options into a clarification Directed Acyclic Graph in JSON format. You need to define:
    * Which questions are parallel initial questions (starting nodes).
    * Which questions have dependency relationships (one question's answer determines the next question).
    * Ensure the final output JSON structure strictly follows the format in "Output Requirements" below.

# Input Data
1. Original Coarse-grained Task
{task}
2. User's Potential Needs List
{intent_list}

# Output Requirements
You can only generate one JSON object, without any other additional content. This object represents the clarification Directed Acyclic Graph. Its structure must follow the example format below (you do not need to write comments). 'start_node_ids' defines the starting question nodes with no prerequisites. The 'nodes' object contains definitions of all question nodes, and the 'next_node_id' list defines the subsequent question nodes that will be triggered after selecting an option.
{
  "root_node": "ROOT_QUERY_STRING",
  "start_node_ids": ["q1"],
  "nodes": {
    "q1": {
      "id": "q1",
      "text": "QUESTION_TEXT",
      "options": [
        {"text": "OPTION_TEXT", "next_node_id": []},
        {"text": "OPTION_TEXT", "next_node_id": []}
      ]
    }
  }
}

# Important Rules
- Your output language must be the same as the language of the original coarse-grained task. If the original task is written in Chinese, then the generated follow-up questions and option content should also be in Chinese. Similarly, if the original task and scoring criteria are written in English, then the generated follow-up questions and option content should also be in English.
- The number of options corresponding to each question must strictly be no fewer than 2 and no more than 3!"""


EXPAND_GRAPH_PROMPT = """# Task
You have already constructed an initial clarification Directed Acyclic Graph. Now, you need to expand the existing clarification Directed Acyclic Graph by adding deeper-level follow-up questions. Your core task is to deepen and expand the existing clarification Directed Acyclic Graph based on a list of deeper, more fine-grained user intents, increasing its branches and depth, thereby building a more complex clarification path that can comprehensively capture user intents, while ensuring that there is no content duplication between nodes.

# Input Data
1. Initial Clarification Directed Acyclic Graph: A simple clarification Directed Acyclic Graph with only a few nodes or even no nodes
{graph_json}
2. User Intent List: Contains all complete requirements of the user for this task, some of which may require online search to complete
{intent_list}

# Step-by-Step Guide
1. Carefully read and review each item in the user intent list, determining which items are more suitable for obtaining information by asking the user, and which items are more suitable for obtaining information through web search. Avoid asking the user about knowledge that needs to be researched and searched, which would reduce the user experience.
2. Filter out at least 8 intents that are most suitable for obtaining information by asking the user. These often can influence the research direction and establish the foundation for research scope, standards, and focus.
3. Iterate through all intents filtered in step 2, converting each item into a clear and specific clarification question directed at the user, along with 2-3 selectable options. Options can be extracted from text such as "for example," "including," "X and Y," "X or Y" within the intent. For example, the intent item "want to collect the actual income and financial status of China's 9 social strata" can be extracted into the question "Which aspect of the economic situation of China's 9 social strata are you more concerned about?" with two options: "actual income" and "financial status."
    - Note: All option content must originate from the user's potential needs, which means each option represents a valid user requirement. You cannot fabricate content beyond the user's potential needs as options.
4. If the initial clarification Directed Acyclic Graph does not have any nodes, then you directly construct a new clarification Directed Acyclic Graph; if the initial clarification Directed Acyclic Graph has nodes, then you need to expand the clarification Directed Acyclic Graph. The node addition steps are as follows:
    - Understand the current Directed Acyclic Graph's design and each follow-up question within it
    - Iterate through each node, trying to design different follow-up questions for each of its options. These follow-up questions should also play an important role in clarifying user intent and improving the quality of the final report
    - Design 2-3 options for this follow-up question node
    - Design different follow-up questions for each option
    - Continuously and recursively repeat steps 2-4 until a follow-up question subgraph that can clearly clarify user intent is constructed for each newly added node. When designing a subgraph for a node, you can dig deeper based on a particular intent, which is equivalent to designing an increasingly in-depth path for the research, thereby improving the depth of the overall research process.
    - You only need to generate one expanded clarification Directed Acyclic Graph JSON object at the end, without any other additional content.

Important Rules:
1. Carefully check the final generated Directed Acyclic Graph, and delete any nodes with highly overlapping content.
2. The number of options corresponding to each question must strictly be no fewer than 2 and no more than 3! Try to have different options correspond to different follow-up questions to ensure the diversity and density of Directed Acyclic Graph nodes.
3. The total number of nodes in the expanded Directed Acyclic Graph cannot exceed 20.
4. Your output language must be the same as the language of the user intent list. If the user intent list is written in Chinese, then the generated follow-up questions and option content should also be in Chinese. Similarly, if the user intent list is written in English, then the generated follow-up questions and option content should also be in English.

The expanded clarification Directed Acyclic Graph JSON object should contain all nodes from the initial Directed Acyclic Graph and add new nodes and connection relationships to reflect the exploration of deeper user intents. The format must be consistent with the initial graph's format."""


AGENT_SYSTEM_PROMPT = """# Task
You are an AI assistant specializing in user intent clarification. Given an ambiguous user request, your primary goal is to identify the **single most critical** piece of missing information and ask a targeted question to resolve it.

# Guidelines
1. Your response must be a **single paragraph** containing exactly one concise question with 2-3 distinct answer choices. Note that don't provide too many choices, which will make users feel complicated.
2. **NEVER** repeat a question that has already been asked in the conversation history. If a user points out that your question is repetitive, you must immediately pivot to a new line of questioning.
3. Your question must not be a simple rephrasing of the user's request or breaking it down into the components they already mentioned. Instead, it should seek to uncover a crucial piece of underlying context, such as the user's goal or a specific constraint they haven't stated.
4. If the user indicates your question is **NOT Relevant or Important**, re-analyze their request from a different angle and ask a new, valuable question to uncover a different critical piece of information.
5. Respond in the same language as the user's request. For instance, if the user asks in English, you must reply in English; if the user ask in Chinese, you must reply in Chinese."""


FORMAT_JUDGE_PROMPT = """You are tasked with evaluating the format of a question by counting how many distinct questions it contains and assigning a format score accordingly.

# Input
{question}

# Scoring Rubric
- 1.0: The input contains exactly 1 question with multiple options/choices
- 0.5: The input contains exactly 2 questions with options/choices
- 0.0: The input contains more than 2 questions

# How to Count Questions
**Key principle**: Count the number of question marks (?) in the input. Each question mark typically indicates one distinct question.

**Important distinctions**:
- A question may present multiple options or choices (e.g., "option A or option B"). These options are NOT separate questions; they are alternative answers to the same question.
- Options are typically connected by words like "or", "and", or presented as alternatives within a single interrogative sentence.
- Only count distinct questions, not the number of choices/options provided.

# Worked Example
- Question marks: 2
- Reasoning: This contains 2 distinct questions (one about focus areas, another about opportunities vs challenges)
- Score: 0.5

# Output Format
<think>Explain your reasoning for the format and content scores clearly and concisely.</think>

<format_score>Insert only the format score as a float (e.g., 1.0, 0.5, 0.0)</format_score>

> Important:
> - Output **exactly** the two tags shown above.
> - Do **not** include any additional text, explanation, or formatting outside the tags.
> - Ensure clarity and precision in your evaluation reasoning within the '<think>' tag."""


INSIGNIFICANCE_JUDGE_PROMPT = """You are a Quality Assurance specialist for AI-human interaction. Your task is to evaluate whether an AI's follow-up question is "valid" or "redundant".
# Task
Analyze the provided User Request and the AI's Clarification Question to determine if the AI is genuinely seeking new context or simply "parroting" the user.

# Evaluation Criteria
A follow-up question is **REDUNDANT** if:
- Self-Answering: It asks the user to provide the answer to their own original question (e.g., User asks "Which is better, A or B?", AI asks "Do you think A or B is better?").
- Restating Requirements: It asks the user to choose between components they have already explicitly requested to be included (e.g., User asks for "A and B," AI asks "Do you want A or B?").
- Zero Information Gain: It rephrases the request as a question without seeking any underlying constraints, goals, or missing parameters.

# Examples
**Example 1:**
- User Request: "Collect and compile the actual income and financial status of China's current 9 social strata, with particular focus on researching and identifying the characteristics of China's middle class, the actual number of middle-class individuals, their financial capacity, etc."
- Clarification Question: "When researching the income and financial status of China's middle class, which aspect are you most concerned about? A. Income level B. Financial status"
output:
<think>The Clarification Question asks the user to choose between aspects (income and financial status) they already explicitly mentioned wanting to research.</think>
<verdict>1</verdict>

**Example 2:**
- User's Request: "Future development trends of China's finance sector, which subdivided field (such as investment banking, PE, fixed income, etc.) has more upward potential in the future"
- AI Follow-up: "Among the future development trends in China's finance sector, which subdivided field (such as investment banking, private equity (PE), fixed income, etc.) do you think has greater upward potential? A. Investment banking... B. Private equity... C. Fixed income..."

# Input
- User Request: "{original_query}"
- Clarification Question: "{question}"

# Output Format:
<think>A concise explanation of why the question fails or succeeds</think>
<verdict>Insert 1 (redundant) or 0 (valid)</verdict>"""


USER_SIMULATOR_PROMPT = """You are role-playing as a human USER interacting with an AI collaborator to complete a specific task. Your goal is to generate realistic, natural responses that a user might give in this scenario.

# Input Information:
You will be provided with an Intent List
{intent_list}

# Task Description:
Given the ongoing conversation between you (as the user) and the AI assistant, your task is to answer the question in the last message from assistant into a natural, conversational response that a human user would provide.
1. Analyze the question to determine which intent from the Intent List it corresponds to. This intent reflects the underlying goal behind the answer.
2. Use the chosen intent as a guide to craft an answer in a human-like style. Your response should sound like something a person would actually say, rather than a robotic selection of an option or a direct statement of fact.

## Guidelines:
- Stay in Character: Role-play as a human USER. You are NOT an AI. Maintain a consistent personality throughout the chat.
- Goal-Oriented: Keep the chat focused on your intent. Avoid small talk or digressions. Redirect the chat back to the main objective (your Intent List) if it starts to stray.
- Don't Copy Input Directly: Use the provided information for understanding context only. Avoid copying target queries or any provided information directly in your responses.
- While your response should be creative and not a direct copy, it must incorporate every detail information from the chosen intent.

## ***Output Format***
{Your response answer}

> Important:
> - Only output your response answer. Do **not** include any additional text, explanation, or formatting in your response.
> - Phrase your response as a declarative statement, not a question.
> - Your output language must match the language of your chat history. That is, if the chat history is in English, your output rephrased answer must also be in English. Conversely, if the chat history is in Chinese, your output rephrased answer must also be in Chinese."""


SUMMARY_PROMPT = """You are an expert Query Optimizer. Your task is to transform a simple, vague original query into a comprehensive, high-quality finegrained query based on your history clarification dialogue.

# Input Information
1. Original Query: {original_query}
2. History Clarification Dialogue:
{history}

# Guidelines
1. Carefully review your history clarification. Identify every constraint, preference, and detail in the conversation.
2. Merge the core topic of the original query with the specific details extracted from the dialogue.
3. Guarantee absolute information fidelity. The refined query must be strictly and exclusively derived from the original query and the valid clarification dialogue. Do not introduce any external information, assumptions, conceptual substitutions, fabricated details, or excessive stylistic embellishments.
4. Rewrite the prompt into a single, cohesive, and professional query.

# Information Notes
- Perfectly styled as a direct, imperative user command (e.g., starts with "Analyze...", "Create...", "Act as..."). It is written from the user's perspective, is fully actionable, and contains no conversational AI-like phrasing.
- The language should be precise and adapted to the target audience mentioned in the dialogue (if any).
- Ensure there are no logical conflicts.
- Exclude information from any clarification exchanges the user has identified as irrelevant, unimportant, or repetitive. Do not incorporate such dismissed information into the final query.
- Your output language must match the language of the Original Query. That is, if the Original Query is in English, your output 'finegrained_query' must also be in English. Conversely, if the Original Query is in Chinese, your output 'finegrained_query' must also be in Chinese.

## Output Format
Your response must be a **single paragraph** containing **ONLY** the text of the 'finegrained_query'. Do not include explanations."""
